// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "glsr/checkpoint.hpp"
#include "glsr/complexity.hpp"
#include "glsr/config.hpp"
#include "glsr/data.hpp"
#include "glsr/diagnostics.hpp"
#include "glsr/errors.hpp"
#include "glsr/fft.hpp"
#include "glsr/grad_check.hpp"
#include "glsr/graph.hpp"
#include "glsr/image.hpp"
#include "glsr/loss.hpp"
#include "glsr/metrics.hpp"
#include "glsr/model.hpp"
#include "glsr/ops.hpp"
#include "glsr/optim.hpp"
#include "glsr/random.hpp"
#include "glsr/resample.hpp"
#include "glsr/tensor.hpp"
#include "glsr/train.hpp"
