#pragma once

#include "tracespatial/geometry.hpp"
#include "tracespatial/rng.hpp"
#include "tracespatial/mask.hpp"
#include "tracespatial/scene.hpp"
#include "tracespatial/collide.hpp"
#include "tracespatial/plan.hpp"
#include "tracespatial/bypass.hpp"
#include "tracespatial/refine.hpp"
#include "tracespatial/qc.hpp"
#include "tracespatial/reward.hpp"
#include "tracespatial/bench.hpp"
#include "tracespatial/instruct.hpp"
#include "tracespatial/calib.hpp"
#include "tracespatial/synth.hpp"
#include "tracespatial/config.hpp"
#include "tracespatial/io.hpp"
#include "tracespatial/pipeline.hpp"
