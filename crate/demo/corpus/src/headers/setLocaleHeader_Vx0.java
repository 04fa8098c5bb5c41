public ResponseEntity<String> setLocaleHeader(@RequestParam String locale, HttpServletResponse response) {
    if (!locale.chars().allMatch(c -> c < 128) || !SUPPORTED_LOCALES.contains(locale)) {
        return ResponseEntity.badRequest().body("unsupported locale");
    }
    response.setHeader("Content-Language", locale);
    return ResponseEntity.ok("locale set");
}
