// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stochgrid/ensemble.hpp"
#include "stochgrid/error_process.hpp"
#include "stochgrid/errors.hpp"
#include "stochgrid/grid_design.hpp"
#include "stochgrid/hedging_bs.hpp"
#include "stochgrid/limit_law.hpp"
#include "stochgrid/path_engine.hpp"
#include "stochgrid/random_grid.hpp"
#include "stochgrid/rng.hpp"
#include "stochgrid/stats.hpp"
