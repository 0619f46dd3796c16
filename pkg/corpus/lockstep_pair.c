extern int unknown();

int main() {
    int n = unknown();
    int a = 1;
    int b = 1;
    int t = 0;
    if (n <= 0) return 0;
    while (t < n) {
        a++;
        b++;
        t++;
    }
    assert(a == b);
    return 0;
}
