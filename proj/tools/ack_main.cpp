#include <iostream>
#include <string>
#include <vector>

#include "ack/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ack::run_cli(args, std::cout, std::cerr);
}
