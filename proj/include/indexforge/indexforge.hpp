#pragma once

#include "indexforge/buffer.hpp"
#include "indexforge/config.hpp"
#include "indexforge/dataset.hpp"
#include "indexforge/error.hpp"
#include "indexforge/evaluate.hpp"
#include "indexforge/expr.hpp"
#include "indexforge/grammar.hpp"
#include "indexforge/metrics.hpp"
#include "indexforge/npy.hpp"
#include "indexforge/orchestrator.hpp"
#include "indexforge/parallel.hpp"
#include "indexforge/policy.hpp"
#include "indexforge/reward.hpp"
#include "indexforge/rng.hpp"
#include "indexforge/search.hpp"
#include "indexforge/stats.hpp"
#include "indexforge/synth.hpp"
#include "indexforge/token.hpp"
#include "indexforge/updater.hpp"
