#include <iostream>
#include <string>
#include <vector>

#include "fmlab/pipeline/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fmlab::pipeline::run(args, std::cout, std::cerr);
}
