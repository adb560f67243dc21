#pragma once

#include "dsnet/checkpoint.hpp"
#include "dsnet/config.hpp"
#include "dsnet/data.hpp"
#include "dsnet/error.hpp"
#include "dsnet/gradcheck.hpp"
#include "dsnet/layers.hpp"
#include "dsnet/loss.hpp"
#include "dsnet/metrics.hpp"
#include "dsnet/network.hpp"
#include "dsnet/ops.hpp"
#include "dsnet/optimizer.hpp"
#include "dsnet/pgm.hpp"
#include "dsnet/rng.hpp"
#include "dsnet/tape.hpp"
#include "dsnet/tensor.hpp"
#include "dsnet/trainer.hpp"
