#include <cstdio>

int main(int, char**) {
  std::puts("flowinv: placeholder");
  return 0;
}
