// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "xmc/dataset.hpp"
#include "xmc/embedding.hpp"
#include "xmc/error.hpp"
#include "xmc/evaluator.hpp"
#include "xmc/indexer.hpp"
#include "xmc/linear.hpp"
#include "xmc/matcher.hpp"
#include "xmc/pipeline.hpp"
#include "xmc/ranker.hpp"
#include "xmc/sparse.hpp"
#include "xmc/text.hpp"
