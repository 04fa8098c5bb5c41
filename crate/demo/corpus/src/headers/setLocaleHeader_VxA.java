public ResponseEntity<String> setLocaleHeader(@RequestParam String locale, HttpServletResponse response) {
    response.setHeader("Content-Language", locale);
    return ResponseEntity.ok("locale set");
}
