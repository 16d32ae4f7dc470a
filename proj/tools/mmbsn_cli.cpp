#include <iostream>

#include "mmbsn/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mmbsn::run_cli(args, std::cout, std::cerr);
}
