#include <iostream>
#include <string>
#include <vector>

#include "hydg/cli.hpp"

int main(int argc, char** argv) {
  return hydg::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
