#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace resdyn::core {

[[noreturn]] inline void fail(const std::string& what) {
  throw std::invalid_argument(what);
}

}  // namespace resdyn::core

#define RESDYN_REQUIRE(cond, msg)                                  \
  do {                                                             \
    if (!(cond)) {                                                 \
      std::ostringstream oss__;                                    \
      oss__ << msg << " (" << __FILE__ << ":" << __LINE__ << ")";  \
      ::resdyn::core::fail(oss__.str());                           \
    }                                                              \
  } while (0)
