#pragma once

// Umbrella header for the cspursuit library.

#include "cspursuit/binary_io.hpp"
#include "cspursuit/cg.hpp"
#include "cspursuit/config.hpp"
#include "cspursuit/dense.hpp"
#include "cspursuit/dense_matrix.hpp"
#include "cspursuit/error.hpp"
#include "cspursuit/experiments.hpp"
#include "cspursuit/operators.hpp"
#include "cspursuit/oracle_suite.hpp"
#include "cspursuit/pursuits.hpp"
#include "cspursuit/seed.hpp"
#include "cspursuit/support.hpp"
#include "cspursuit/transforms.hpp"
#include "cspursuit/vector_ops.hpp"
