#include "codemix/cli/app.hpp"

int main(int argc, char** argv) { return codemix::cli::run(argc, argv); }
