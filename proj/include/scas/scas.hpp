#pragma once

// Umbrella header.

#include "scas/error.hpp"
#include "scas/io.hpp"
#include "scas/linalg.hpp"
#include "scas/model.hpp"
#include "scas/solvers/common.hpp"
#include "scas/solvers/schedule.hpp"
#include "scas/solvers/scas.hpp"
#include "scas/solvers/batch.hpp"
#include "scas/solvers/stochastic.hpp"
#include "scas/data.hpp"
#include "scas/bench.hpp"
#include "scas/config.hpp"
