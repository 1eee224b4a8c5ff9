#ifndef TDC_TYPES_HPP
#define TDC_TYPES_HPP

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tdc {

using Complex = std::complex<double>;

template <typename T> using Mat4 = Eigen::Matrix<std::complex<T>, 4, 4>;
template <typename T> using Vec4 = Eigen::Matrix<std::complex<T>, 4, 1>;

using Mat4c = Mat4<double>;
using Vec4c = Vec4<double>;

inline constexpr double kPi = 3.14159265358979323846;

// Error hierarchy. Everything the library throws derives from Error.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class NumericalError : public Error {
public:
  using Error::Error;
};

class StatisticsError : public Error {
public:
  using Error::Error;
};

} // namespace tdc

#endif // TDC_TYPES_HPP
