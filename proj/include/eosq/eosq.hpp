#pragma once

#include "eosq/common.hpp"
#include "eosq/rng.hpp"
#include "eosq/covariance.hpp"
#include "eosq/synth.hpp"
#include "eosq/spectral.hpp"
#include "eosq/lloyd_max.hpp"
#include "eosq/bitpack.hpp"
#include "eosq/turboquant.hpp"
#include "eosq/shrinkage.hpp"
#include "eosq/pipeline.hpp"
#include "eosq/metrics.hpp"
#include "eosq/io.hpp"
