#pragma once

#include "opcalc/core.hpp"
#include "opcalc/quadrature.hpp"
#include "opcalc/symbol_poly.hpp"
#include "opcalc/multiplier.hpp"
#include "opcalc/kernel_synthesis.hpp"
#include "opcalc/spherical_means.hpp"
#include "opcalc/oracle.hpp"
#include "opcalc/expr.hpp"
#include "opcalc/problem_io.hpp"
