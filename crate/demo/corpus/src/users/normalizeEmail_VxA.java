public String normalizeEmail(String raw) {
    return raw.trim().toLowerCase();
}
