#pragma once

// Umbrella header: the full sliding-mode control toolkit.

#include "qsmc/amplification.hpp"
#include "qsmc/bang_bang.hpp"
#include "qsmc/fidelity.hpp"
#include "qsmc/io.hpp"
#include "qsmc/models.hpp"
#include "qsmc/period_design.hpp"
#include "qsmc/propagate.hpp"
#include "qsmc/rng.hpp"
#include "qsmc/scenario.hpp"
#include "qsmc/schedule.hpp"
#include "qsmc/sliding_mode.hpp"
#include "qsmc/state.hpp"
