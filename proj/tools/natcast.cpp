#include <cstdio>

int main() {
  std::puts("natcast: placeholder");
  return 0;
}
