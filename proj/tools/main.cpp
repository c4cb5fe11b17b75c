#include "relstance/cli.hpp"

int main(int argc, char** argv) { return relstance::dispatch(argc, argv); }
