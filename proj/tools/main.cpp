#include <iostream>
#include <string>
#include <vector>

#include "uavassoc/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return uavassoc::run_cli(args, std::cout, std::cerr);
}
