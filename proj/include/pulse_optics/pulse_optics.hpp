#pragma once

#include "checks.hpp"
#include "config.hpp"
#include "error.hpp"
#include "hyperbolic_model.hpp"
#include "linalg.hpp"
#include "oscillatory_calculus.hpp"
#include "parallel.hpp"
#include "profile_solver.hpp"
#include "pulse.hpp"
#include "singular_solver.hpp"
#include "sweep_harness.hpp"
#include "system.hpp"
#include "theta_signal.hpp"
