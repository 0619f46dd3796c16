extern int unknown();

int main() {
    int n = unknown();
    int s = 0;
    int i = 0;
    if (n <= 0) return 0;
    while (i < n) {
        s = s + i;
        i++;
    }
    assert(s >= 0);
    return 0;
}
