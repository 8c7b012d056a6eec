#pragma once

#include "densctl/error.hpp"
#include "densctl/expression.hpp"
#include "densctl/grid.hpp"
#include "densctl/model.hpp"
#include "densctl/operators.hpp"
#include "densctl/eigensolver.hpp"
#include "densctl/spectral.hpp"
#include "densctl/pde.hpp"
#include "densctl/random.hpp"
#include "densctl/sampling.hpp"
#include "densctl/inverse.hpp"
#include "densctl/config.hpp"
#include "densctl/io.hpp"

namespace densctl {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace densctl
