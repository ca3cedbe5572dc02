#include <iostream>

#include "e2emd/cli/cli.hpp"

int main(int argc, char** argv) {
  return e2emd::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
