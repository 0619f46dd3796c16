extern int unknown();

int main() {
    int n = unknown();
    int x = 0;
    int low = 0;
    int t = 0;
    if (n <= 0) return 0;
    while (t < n) {
        x = unknown();
        if (x < low) low = x;
        t++;
    }
    assert(low <= 0);
    return 0;
}
