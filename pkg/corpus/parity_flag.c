int main() {
    int n;
    int b = 0;
    int k = 0;
    if (n <= 0) return 0;
    while (k < n) {
        b = 1 - b;
        k++;
    }
    assert(b == 0 || b == 1);
    return 0;
}
