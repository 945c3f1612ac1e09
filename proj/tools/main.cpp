#include <iostream>
#include <string>
#include <vector>

#include "sef/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return sef::cli::run(args, std::cout, std::cerr);
}
