#pragma once

#include "eco/random.hpp"
#include "eco/tensor.hpp"
#include "eco/vector_stats.hpp"
