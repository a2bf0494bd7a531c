#ifndef RESADAPT_TYPES_HPP_
#define RESADAPT_TYPES_HPP_

#include "resadapt/autodiff.hpp"

namespace resadapt {

using DenseMatrix = ad::Matrix<double>;
using DenseVector = ad::Vector<double>;
using Tape = ad::Tape<double>;
using Var = ad::Var<double>;
using ad::Nonlinearity;

}  // namespace resadapt

#endif  // RESADAPT_TYPES_HPP_
