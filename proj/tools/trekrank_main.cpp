#include <iostream>
#include <string>
#include <vector>

#include "trekrank/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return trekrank::run_cli(args, std::cout, std::cerr);
}
