#pragma once

// Uniform time grids on [0, 1] and nodal state/control samples.

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace mocp {

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniform grid with nodes t_i = i/N, i = 0..N.
class Grid {
 public:
  explicit Grid(int intervals) : intervals_(intervals) {
    if (intervals < 2) throw GridError("grid needs at least 2 intervals, got " + std::to_string(intervals));
  }

  int intervals() const noexcept { return intervals_; }
  int nodes() const noexcept { return intervals_ + 1; }
  double step() const noexcept { return 1.0 / intervals_; }
  double node(int i) const noexcept {
    return i == intervals_ ? 1.0 : static_cast<double>(i) / intervals_;
  }

  /// Composite trapezoid weight of node i.
  double weight(int i) const noexcept {
    return (i == 0 || i == intervals_) ? 0.5 * step() : step();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int intervals_;
};

/// State and control samples at the grid nodes; row i holds time t_i.
struct Samples {
  Grid grid{2};
  Eigen::MatrixXd x;  // (N+1) x n
  Eigen::MatrixXd u;  // (N+1) x l

  int state_dim() const { return static_cast<int>(x.cols()); }
  int control_dim() const { return static_cast<int>(u.cols()); }
};

/// Reference pair (x̄, ū).
struct Trajectory : Samples {};

/// Perturbation direction z = (x, u) about a reference trajectory.
struct Direction : Samples {
  Direction scaled(double alpha) const {
    Direction d = *this;
    d.x *= alpha;
    d.u *= alpha;
    return d;
  }
};

inline void require_shape(const Samples& s, int n, int l) {
  const auto rows = s.grid.nodes();
  if (s.x.rows() != rows || s.x.cols() != n || s.u.rows() != rows || s.u.cols() != l) {
    throw GridError("sample shape mismatch: expected " + std::to_string(rows) + "x" +
                    std::to_string(n) + " states and " + std::to_string(rows) + "x" +
                    std::to_string(l) + " controls");
  }
}

/// Composite trapezoid rule over the grid.
inline double quadrature(const Eigen::Ref<const Eigen::VectorXd>& samples, const Grid& grid) {
  if (samples.size() != grid.nodes()) throw GridError("quadrature needs one sample per node");
  const int last = grid.intervals();
  double interior = 0.0;
  for (int i = 1; i < last; ++i) interior += samples[i];
  return grid.step() * (0.5 * (samples[0] + samples[last]) + interior);
}

/// Largest absolute entry.
inline double max_norm(const Eigen::MatrixXd& samples) {
  return samples.size() == 0 ? 0.0 : samples.cwiseAbs().maxCoeff();
}

/// L2([0,1]) norm of nodal samples, squared row norms integrated by trapezoid.
inline double l2_norm(const Eigen::MatrixXd& samples, const Grid& grid) {
  const Eigen::VectorXd sq = samples.rowwise().squaredNorm();
  return std::sqrt(quadrature(sq, grid));
}

// ---------------------------------------------------------------------------
// JSON: {"grid_n": N, "x": [[...]...], "u": [[...]...]}

namespace detail {
inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& field,
                                        Eigen::Index rows) {
  if (!j.is_array()) throw GridError("'" + field + "' must be an array of rows");
  if (static_cast<Eigen::Index>(j.size()) != rows)
    throw GridError("'" + field + "' has " + std::to_string(j.size()) + " rows, expected " +
                    std::to_string(rows));
  Eigen::Index cols = -1;
  Eigen::MatrixXd m;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array()) throw GridError("'" + field + "' row " + std::to_string(i) + " is not an array");
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      m.resize(rows, cols);
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw GridError("'" + field + "' is ragged at row " + std::to_string(i));
    }
    for (Eigen::Index k = 0; k < cols; ++k) {
      const auto& v = row[static_cast<std::size_t>(k)];
      if (!v.is_number()) throw GridError("'" + field + "' has a non-numeric entry");
      m(i, k) = v.get<double>();
    }
  }
  return m;
}
}  // namespace detail

inline nlohmann::json to_json(const Samples& s) {
  return {{"grid_n", s.grid.intervals()},
          {"x", detail::matrix_to_json(s.x)},
          {"u", detail::matrix_to_json(s.u)}};
}

template <typename SampleType>
SampleType samples_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw GridError("sample document must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "grid_n" && key != "x" && key != "u") throw GridError("unknown field '" + key + "'");
  }
  if (!j.contains("grid_n") || !j.at("grid_n").is_number_integer())
    throw GridError("'grid_n' must be an integer");
  SampleType s;
  s.grid = Grid(j.at("grid_n").get<int>());
  if (!j.contains("x") || !j.contains("u")) throw GridError("sample document needs 'x' and 'u'");
  s.x = detail::matrix_from_json(j.at("x"), "x", s.grid.nodes());
  s.u = detail::matrix_from_json(j.at("u"), "u", s.grid.nodes());
  return s;
}

inline Trajectory trajectory_from_json(const nlohmann::json& j) {
  return samples_from_json<Trajectory>(j);
}

inline Direction direction_from_json(const nlohmann::json& j) {
  return samples_from_json<Direction>(j);
}

/// Linear interpolation of nodal samples onto another uniform grid.
inline Eigen::MatrixXd resample(const Eigen::MatrixXd& samples, const Grid& from, const Grid& to) {
  if (from == to) return samples;
  Eigen::MatrixXd out(to.nodes(), samples.cols());
  for (int i = 0; i < to.nodes(); ++i) {
    const double pos = to.node(i) * from.intervals();
    int k = static_cast<int>(std::floor(pos));
    if (k >= from.intervals()) k = from.intervals() - 1;
    const double w = pos - k;
    out.row(i) = (1.0 - w) * samples.row(k) + w * samples.row(k + 1);
  }
  return out;
}

}  // namespace mocp
