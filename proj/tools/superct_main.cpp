#include <iostream>
#include <string>
#include <vector>

#include "superct/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return superct::cli_run(args, std::cout, std::cerr);
}
