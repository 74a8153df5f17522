#pragma once

#include "red/aggregation.hpp"
#include "red/checkpoint.hpp"
#include "red/config.hpp"
#include "red/conv_gru.hpp"
#include "red/dataset.hpp"
#include "red/errors.hpp"
#include "red/glimpse.hpp"
#include "red/gradcheck.hpp"
#include "red/image_io.hpp"
#include "red/mnist.hpp"
#include "red/params.hpp"
#include "red/policy.hpp"
#include "red/rng.hpp"
#include "red/stained_mnist.hpp"
#include "red/tape.hpp"
#include "red/tensor.hpp"
#include "red/trainer.hpp"
