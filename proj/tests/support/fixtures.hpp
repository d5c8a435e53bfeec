#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#ifndef BABYLON_FIXTURE_DIR
#error "BABYLON_FIXTURE_DIR must be defined"
#endif

namespace babylon::testing {

inline std::string fixture_path(const std::string& relative) {
  return std::string(BABYLON_FIXTURE_DIR) + "/" + relative;
}

inline std::string read_fixture(const std::string& relative) {
  std::ifstream in(fixture_path(relative), std::ios::binary);
  if (!in) throw std::runtime_error("missing fixture " + relative);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace babylon::testing
