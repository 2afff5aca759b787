#include <cstdio>

int main() {
  std::puts("macli: under construction");
  return 64;
}
