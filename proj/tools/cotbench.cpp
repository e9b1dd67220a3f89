#include <iostream>

#include "cotbench/cli.hpp"

int main(int argc, char** argv) {
  return cotbench::cli_dispatch({argv + 1, argv + argc}, std::cout, std::cerr);
}
