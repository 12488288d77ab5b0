#include <iostream>

#include "run.hpp"

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);
  std::vector<std::string> args(argv + 1, argv + argc);
  return reclink::cli::main_entry(args, std::cout, std::cerr);
}
