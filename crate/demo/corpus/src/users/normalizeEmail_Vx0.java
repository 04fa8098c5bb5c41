public String normalizeEmail(String raw) {
    if (raw == null) {
        throw new ValidationException("email required");
    }
    String decoded = new String(raw.getBytes(StandardCharsets.UTF_8), StandardCharsets.UTF_8);
    String canonical = Normalizer.normalize(decoded, Normalizer.Form.NFKC).trim().toLowerCase(Locale.ROOT);
    if (canonical.length() > 254) {
        throw new ValidationException("email too long");
    }
    return canonical;
}
