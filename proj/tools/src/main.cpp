#include <iostream>

#include "sgl_cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sgl::cli::run(args, std::cout, std::cerr);
}
