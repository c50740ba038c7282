#pragma once

// Umbrella header: the full residual-dynamics stack.

#include "resdyn/adapt/rls.hpp"
#include "resdyn/bench/commands.hpp"
#include "resdyn/bench/config.hpp"
#include "resdyn/bench/manifest.hpp"
#include "resdyn/bench/metrics.hpp"
#include "resdyn/control/gains.hpp"
#include "resdyn/control/loop.hpp"
#include "resdyn/control/pid.hpp"
#include "resdyn/control/trim.hpp"
#include "resdyn/core/grad_check.hpp"
#include "resdyn/core/layers.hpp"
#include "resdyn/core/param_store.hpp"
#include "resdyn/core/rng.hpp"
#include "resdyn/core/tape.hpp"
#include "resdyn/core/tensor.hpp"
#include "resdyn/io/csv.hpp"
#include "resdyn/io/svg.hpp"
#include "resdyn/model/checkpoint.hpp"
#include "resdyn/model/fdt.hpp"
#include "resdyn/model/fdt_config.hpp"
#include "resdyn/model/loss.hpp"
#include "resdyn/model/train.hpp"
#include "resdyn/sim/dataset.hpp"
#include "resdyn/sim/plant.hpp"
#include "resdyn/sim/residual.hpp"
#include "resdyn/sim/trajectory.hpp"
