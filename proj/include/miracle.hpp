#pragma once

#include "miracle/adam.hpp"
#include "miracle/bit_io.hpp"
#include "miracle/byte_io.hpp"
#include "miracle/config.hpp"
#include "miracle/dataset.hpp"
#include "miracle/errors.hpp"
#include "miracle/format.hpp"
#include "miracle/gaussian.hpp"
#include "miracle/grs.hpp"
#include "miracle/harness.hpp"
#include "miracle/model.hpp"
#include "miracle/mrc.hpp"
#include "miracle/partition.hpp"
#include "miracle/prefix_code.hpp"
#include "miracle/prng.hpp"
#include "miracle/trainer.hpp"
