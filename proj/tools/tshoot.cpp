#include <iostream>

#include "tshoot/cli.hpp"

int main(int argc, char** argv) {
  return tshoot::run_cli({argv + 1, argv + argc}, std::cin, std::cout, std::cerr);
}
