#include "mfchaos/cli/cli.hpp"

int main(int argc, char** argv) { return mfchaos::run(argc, argv); }
