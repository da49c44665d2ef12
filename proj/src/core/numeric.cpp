#include "metaprior/numeric.hpp"

#include <boost/math/special_functions/erf.hpp>

#include "metaprior/error.hpp"

namespace metaprior {

double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, ErrorCode::DomainError, "normal quantile needs p in (0, 1)");
  return -1.41421356237309504880 * boost::math::erfc_inv(2.0 * p);
}

}  // namespace metaprior
