#pragma once

#include "ensemble.hpp"
#include "error.hpp"
#include "filters.hpp"
#include "linear_solvers.hpp"
#include "observation.hpp"
#include "optimize.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "sampling.hpp"
#include "shrinkage.hpp"
#include "models/lorenz96.hpp"
#include "models/qg.hpp"
#include "models/registry.hpp"
#include "models/rk4.hpp"
#include "harness/config.hpp"
#include "harness/experiment.hpp"
#include "harness/output.hpp"
