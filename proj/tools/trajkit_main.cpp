// Batch CLI for trajectory clustering. Subcommands are wired up in cli.hpp;
// this translation unit only owns main().

#include <cstdio>

int main(int argc, char** argv) {
    (void)argc;
    (void)argv;
    std::puts("trajkit: placeholder");
    return 0;
}
