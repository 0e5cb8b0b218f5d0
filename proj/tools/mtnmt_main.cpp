#include <iostream>

#include "mtnmt/cli.hpp"

int main(int argc, char** argv) {
  return mtnmt::cli_main(argc, argv, std::cout);
}
