#pragma once

#include "dot/attention.hpp"
#include "dot/config.hpp"
#include "dot/data.hpp"
#include "dot/errors.hpp"
#include "dot/gradcheck.hpp"
#include "dot/graph.hpp"
#include "dot/matrix.hpp"
#include "dot/metrics.hpp"
#include "dot/nets.hpp"
#include "dot/ot.hpp"
#include "dot/rng.hpp"
#include "dot/tape.hpp"
#include "dot/train.hpp"
