#pragma once

#include "mocp/expr.hpp"
#include "mocp/grid.hpp"
#include "mocp/problem.hpp"
#include "mocp/reference.hpp"
#include "mocp/trajectory.hpp"
#include "mocp/weights.hpp"
#include "mocp/solvers.hpp"
#include "mocp/kkt.hpp"
#include "mocp/second_order.hpp"
#include "mocp/findim.hpp"
#include "mocp/commands.hpp"
