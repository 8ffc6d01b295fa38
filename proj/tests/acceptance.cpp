// Acceptance suite: one pass/fail line per criterion. Placeholder until the
// library builds; filled in below.
#include <cstdio>

int main() {
    std::printf("acceptance suite not yet implemented\n");
    return 1;
}
