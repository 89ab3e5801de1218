#pragma once

#include "fmlab/core/condition.hpp"
#include "fmlab/core/error.hpp"
#include "fmlab/core/flow_matching.hpp"
#include "fmlab/core/random.hpp"
#include "fmlab/core/sample.hpp"
#include "fmlab/core/schedule.hpp"

#include "fmlab/ode/integrator.hpp"

#include "fmlab/nn/checkpoint.hpp"
#include "fmlab/nn/embedding.hpp"
#include "fmlab/nn/train_state.hpp"
#include "fmlab/nn/trainer.hpp"
#include "fmlab/nn/velocity_model.hpp"

#include "fmlab/cond/attention.hpp"
#include "fmlab/cond/feature_map.hpp"
#include "fmlab/cond/modulation.hpp"

#include "fmlab/mask/binary_mask.hpp"
#include "fmlab/mask/components.hpp"
#include "fmlab/mask/coverage.hpp"
#include "fmlab/mask/morphology.hpp"
#include "fmlab/mask/propagate.hpp"
#include "fmlab/mask/target_stats.hpp"
#include "fmlab/mask/thinning.hpp"

#include "fmlab/metrics/distribution.hpp"
#include "fmlab/metrics/losses.hpp"
#include "fmlab/metrics/segmentation.hpp"

#include "fmlab/io/config.hpp"
#include "fmlab/io/pnm.hpp"
#include "fmlab/io/tsv.hpp"
