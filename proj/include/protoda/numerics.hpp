#ifndef PROTODA_NUMERICS_HPP
#define PROTODA_NUMERICS_HPP

#include "protoda/numerics/adam.hpp"
#include "protoda/numerics/checkpoint.hpp"
#include "protoda/numerics/grad_check.hpp"
#include "protoda/numerics/ops.hpp"
#include "protoda/numerics/parameter_set.hpp"
#include "protoda/numerics/tape.hpp"
#include "protoda/numerics/tensor.hpp"

#endif  // PROTODA_NUMERICS_HPP
