#pragma once

#include "bvecchia/batched.hpp"
#include "bvecchia/error.hpp"
#include "bvecchia/exact.hpp"
#include "bvecchia/inference.hpp"
#include "bvecchia/kernels.hpp"
#include "bvecchia/linalg.hpp"
#include "bvecchia/optimize.hpp"
#include "bvecchia/random.hpp"
#include "bvecchia/spatial.hpp"
#include "bvecchia/vecchia.hpp"
