#pragma once

#include "sice/analysis.hpp"
#include "sice/cohen_ml.hpp"
#include "sice/dataset.hpp"
#include "sice/errors.hpp"
#include "sice/report.hpp"
#include "sice/rng.hpp"
#include "sice/sampling.hpp"
#include "sice/sice_core.hpp"
#include "sice/stat_kernels.hpp"
#include "sice/tables.hpp"
#include "sice/trial_sim.hpp"
