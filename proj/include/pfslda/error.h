#ifndef PFSLDA_ERROR_H_
#define PFSLDA_ERROR_H_

#include <stdexcept>
#include <string>

namespace pfslda {

// Raised for invalid inputs, malformed files and violated preconditions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pfslda

#endif  // PFSLDA_ERROR_H_
