#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "zlse/errors.hpp"

int main(int argc, char** argv) {
  zlse::set_warnings_enabled(false);
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
