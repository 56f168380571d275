#include "scaptcha/cli.hpp"

int main(int argc, char** argv) { return scaptcha::cli::run(argc, argv); }
