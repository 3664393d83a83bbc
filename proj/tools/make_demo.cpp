// Writes the bundled demo into a directory.
//
//   make_demo <dir> [rows] [seed]

#include "demo_data.hpp"

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_demo <dir> [rows] [seed]\n";
    return 1;
  }
  const std::size_t n = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 600;
  const std::uint64_t seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 11;
  try {
    detangle::demo::write_demo(argv[1], n, seed);
  } catch (const std::exception& e) {
    std::cerr << "make_demo: " << e.what() << "\n";
    return 1;
  }
  std::cout << "wrote demo with " << n << " rows to " << argv[1] << "\n";
  return 0;
}
