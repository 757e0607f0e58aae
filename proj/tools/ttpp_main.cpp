#include <iostream>
#include <string>
#include <vector>

#include "ttpp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ttpp::run_cli(args, std::cout, std::cerr);
}
