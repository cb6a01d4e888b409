#pragma once

#include "faultlab/nncore/adam.hpp"
#include "faultlab/nncore/checkpoint.hpp"
#include "faultlab/nncore/dense.hpp"
#include "faultlab/nncore/gradcheck.hpp"
#include "faultlab/nncore/loss.hpp"
#include "faultlab/nncore/lstm.hpp"
#include "faultlab/nncore/tensor.hpp"
#include "faultlab/nncore/train.hpp"
#include "faultlab/nncore/stacked.hpp"
