int main() {
    int n;
    int s = 0;
    int i = 0;
    if (n < 0) return 0;
    while (i < n) {
        s = s + 2;
        i = i + 1;
    }
    assert(s == 2 * i);
    return 0;
}
