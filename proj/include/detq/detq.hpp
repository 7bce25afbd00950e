// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DETQ_DETQ_HPP
#define DETQ_DETQ_HPP

#include "detq/entropy_model.hpp"
#include "detq/errors.hpp"
#include "detq/float_stack.hpp"
#include "detq/gmm.hpp"
#include "detq/int_infer.hpp"
#include "detq/interop.hpp"
#include "detq/model_io.hpp"
#include "detq/quantizer.hpp"
#include "detq/random.hpp"
#include "detq/range_codec.hpp"
#include "detq/rounding.hpp"
#include "detq/tensor.hpp"
#include "detq/verify.hpp"

#endif  // DETQ_DETQ_HPP
