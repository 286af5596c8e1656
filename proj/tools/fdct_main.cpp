#include "fdct/cli.hpp"
#include "fdct/core.hpp"

int main(int argc, char** argv) {
  fdct::tune_allocator();
  return fdct::run_cli(argc, argv);
}
