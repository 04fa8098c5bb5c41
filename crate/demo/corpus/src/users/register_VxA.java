public ResponseEntity<String> register(@RequestParam String email, @RequestParam String username, @RequestParam String age) {
    String normalized = normalizeEmail(email);
    int years = Integer.parseInt(age);
    userRepository.save(new User(normalized, username, years));
    return ResponseEntity.ok("registered " + username);
}
