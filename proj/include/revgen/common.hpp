// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace revgen {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
[[noreturn]] inline void fail(const char* expr, const std::string& msg) {
  std::ostringstream os;
  os << msg;
  if (expr && *expr) os << " (" << expr << ")";
  throw Error(os.str());
}
}  // namespace detail

#define REVGEN_CHECK(cond, msg)                              \
  do {                                                       \
    if (!(cond)) ::revgen::detail::fail(#cond, (msg));       \
  } while (0)

#define REVGEN_FAIL(msg) ::revgen::detail::fail("", (msg))

}  // namespace revgen
