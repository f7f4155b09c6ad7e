#include <iostream>

#include "reachkin/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return reachkin::cli::run(args, std::cout, std::cerr);
}
